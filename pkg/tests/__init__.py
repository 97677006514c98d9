"""Test suite for sparsefront."""
