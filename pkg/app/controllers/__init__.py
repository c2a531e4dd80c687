# app/controllers/__init__.py
"""
This package contains the controllers behind the lab commands.
Each controller corresponds to a specific area (e.g., profiles, calibration, paths, flows, etc.).
"""
