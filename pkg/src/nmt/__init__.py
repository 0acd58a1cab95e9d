"""Preorder Transfer Toolkit - Seq2Seq Model"""
