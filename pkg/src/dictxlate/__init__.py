"""Preorder Transfer Toolkit - Dictionary Pivoting"""
