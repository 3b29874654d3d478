""" helper functions for jsonlines usage """

class myjsonlines():
    """ jsonlines is loaded on first use """

    _jsonlines = None

    def available(self):
        """ available() """
        if not myjsonlines._jsonlines:
            try:
                import jsonlines
                myjsonlines._jsonlines = jsonlines
            except ImportError:
                return False
        return True

    def Writer(self, fd):
        """ one summary object per line, keys sorted """
        return myjsonlines._jsonlines.Writer(fd, sort_keys=True)
