# borelsum - Borel summation of level-1 ODE solutions and thimble integrals
__version__ = "0.1.0"
