#!/usr/bin/env python
"""mddpm via command line"""
import sys

from .mddpm_cli import mddpm_cli

def main(args=None):
    """mddpm via command line"""
    if args is None:
        args = sys.argv[1:]
    mddpm_cli(args)

if __name__ == '__main__':
    main()
