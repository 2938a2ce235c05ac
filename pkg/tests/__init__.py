"""Test suite for rss_aoa_positioning."""
