"""Preorder Transfer Toolkit - Rule-Based Pre-ordering"""
