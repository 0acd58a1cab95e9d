"""Preorder Transfer Toolkit - Translation Metrics"""
