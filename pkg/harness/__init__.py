"""Harness - Studi simulasi skenario, ingestion data lapangan, dan tabel hasil."""
