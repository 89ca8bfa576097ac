"""Trading a two-leg bond futures spread with DBN features and classical classifiers."""

__version__ = "0.1.0"
