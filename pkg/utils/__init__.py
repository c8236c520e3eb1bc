"""
Run state, activity logging, errors, seeding and configuration loading
"""
