"""Preorder Transfer Toolkit - Main Package"""

__version__ = "1.0.0"
