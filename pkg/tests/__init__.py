"""Test suite for Cognitive Document Reader."""
