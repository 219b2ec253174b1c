"""Test suite for the greedy rational interpolation eigensolver"""
