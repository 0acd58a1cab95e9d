"""Preorder Transfer Toolkit - Experiment Pipeline"""
