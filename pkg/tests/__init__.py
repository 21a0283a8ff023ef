"""Unit tests for the animalbox labeling pipeline."""
