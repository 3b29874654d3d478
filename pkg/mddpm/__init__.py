""" multi-conditioned low-pass guided DDPM sampling, at desk scale"""

__version__ = '1.0.0'

from .pipeline import MDDPM
from .exceptions import MDDPMError

__all__ = ['MDDPM', 'MDDPMError']
