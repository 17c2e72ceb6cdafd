"""Numerical laboratory for boundary regularity of fully nonlinear elliptic
equations on domains with flatness controlled by a Dini modulus."""

__version__ = "0.1.0"
