""" errors for the mddpm library"""

# exit codes used by the command line; every error class carries one
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

class MDDPMError(Exception):
    """ errors for the mddpm library"""

    exit_code = EXIT_CONFIG

    class CodeMessage(object):
        """ a small class to save away an interger and string (the code and the message)"""

        def __init__(self, code, message):
            self.code = code
            self.message = message
        def __int__(self):
            return self.code
        def __str__(self):
            return self.message
        def __repr__(self):
            return '%d %s' % (self.code, self.message)

    def __init__(self, code, message, error_chain=None):
        """ errors for the mddpm library"""

        super().__init__(message)
        self.evalue = self.CodeMessage(int(code), str(message))
        self.error_chain = None
        if error_chain is not None:
            self.error_chain = []
            for evalue in error_chain:
                if isinstance(evalue, self.CodeMessage):
                    self.error_chain.append(evalue)
                else:
                    self.error_chain.append(
                        self.CodeMessage(int(evalue['code']), str(evalue['message'])))

    def __int__(self):
        """ integer value for mddpm errors"""

        return int(self.evalue)

    def __str__(self):
        """ string value for mddpm errors"""

        return str(self.evalue)

    def __len__(self):
        """ mddpm errors can contain a chain of errors"""

        if self.error_chain is None:
            return 0
        return len(self.error_chain)

    def __getitem__(self, ii):
        """ mddpm errors can contain a chain of errors"""

        return self.error_chain[ii]

    def __iter__(self):
        """ mddpm errors can contain a chain of errors"""

        if self.error_chain is None:
            return
        for evalue in self.error_chain:
            yield evalue

class InvalidArgumentError(MDDPMError):
    """ bad shapes, ranges or flags"""

    def __init__(self, message, error_chain=None):
        super().__init__(1000, message, error_chain)

class ScheduleError(MDDPMError):
    """ variance schedule could not be built"""

    def __init__(self, message):
        super().__init__(1100, message)

class NumericError(MDDPMError):
    """ non-finite values or divergence"""

    exit_code = EXIT_NUMERIC

    def __init__(self, message, t=None, step=None):
        super().__init__(1200, message)
        self.t = t
        self.step = step

class ContractError(MDDPMError):
    """ a caller broke an operation contract (for example noise at t=1)"""

    exit_code = EXIT_NUMERIC

    def __init__(self, message):
        super().__init__(1300, message)

class ConfigError(MDDPMError):
    """ experiment configuration errors - the chain holds every violation"""

    def __init__(self, message, violations=None):
        chain = None
        if violations:
            chain = [{'code': 1401, 'message': '%s: %s' % (key, why)} for key, why in violations]
        super().__init__(1400, message, chain)
        self.violations = list(violations or [])

    def keys(self):
        """ key paths of every violation"""
        return [key for key, _ in self.violations]

class StorageError(MDDPMError):
    """ reading or writing an artifact failed"""

    exit_code = EXIT_IO

    def __init__(self, message, path=None, index=None):
        super().__init__(1500, message)
        self.path = path
        self.index = index

class FormatError(MDDPMError):
    """ binary artifact could not be decoded"""

    exit_code = EXIT_IO
    format_code = 1600

    def __init__(self, message):
        super().__init__(self.format_code, message)

class BadMagicError(FormatError):
    """ wrong leading magic bytes"""
    format_code = 1601

class UnsupportedVersionError(FormatError):
    """ written by a newer major version"""
    format_code = 1602

class TruncatedFileError(FormatError):
    """ payload shorter than the header promises"""
    format_code = 1603

class ShapeOverflowError(FormatError):
    """ header declares an impossible shape"""
    format_code = 1604
