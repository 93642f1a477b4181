"""Unit, Service, and Integration tests."""
