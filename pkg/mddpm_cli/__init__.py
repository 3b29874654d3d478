"""mddpm via command line"""
