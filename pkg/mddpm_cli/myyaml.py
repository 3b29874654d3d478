""" helper functions for yaml usage """

class myyaml():
    """ yaml is loaded on first use so json-only runs never import it """

    _yaml = None

    def available(self):
        """ available() """
        if not myyaml._yaml:
            try:
                import yaml
                myyaml._yaml = yaml
            except ImportError:
                return False
        return True

    def safe_dump(self, results):
        """ block style, keys sorted - the same summary always prints the same """
        return myyaml._yaml.safe_dump(results, default_flow_style=False, sort_keys=True)
