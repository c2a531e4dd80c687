# app/routes/__init__.py
"""
This package contains the command definitions for the Allen-Cahn minmax lab.
It aggregates the commands via a blueprint which is later registered
in the application factory.
"""
