""" Logging for mddpm"""
import logging


class MDlogger(object):
    """ Logging for mddpm"""

    def __init__(self, level):
        """ Logging for mddpm"""
        self.logger_level = self._get_logging_level(level)
        # torch is chatty at debug level
        torch_logger = logging.getLogger("torch")
        torch_logger.setLevel(logging.WARNING)

    def getLogger(self):
        """ Logging for mddpm"""
        # create logger
        logger = logging.getLogger('mddpm')
        logger.setLevel(self.logger_level)

        if not logger.handlers:
            ch = logging.StreamHandler()
            ch.setLevel(self.logger_level)

            # create formatter
            formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')

            # add formatter to ch
            ch.setFormatter(formatter)

            # add ch to logger
            logger.addHandler(ch)
        else:
            for ch in logger.handlers:
                ch.setLevel(self.logger_level)

        return logger

    def _get_logging_level(self, level):
        """ Logging for mddpm"""
        if level is True:
            return logging.DEBUG
        return logging.INFO
