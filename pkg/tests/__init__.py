"""Test suite for nonnegative FIR deconvolution"""
