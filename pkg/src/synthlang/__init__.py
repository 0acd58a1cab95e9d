"""Preorder Transfer Toolkit - Synthetic Languages"""
