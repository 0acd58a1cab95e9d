"""Preorder Transfer Toolkit - Bracketed Parse Trees"""
