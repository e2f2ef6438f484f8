"""Tests for elliptic-dedekind."""
