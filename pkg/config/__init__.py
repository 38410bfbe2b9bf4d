"""
Configuration settings for the frequency-secured market clearing engine
"""
