"""Agenda Topics - Seeded topic model and cross-corpus agenda analytics."""
