# tests/__init__.py
# Package marker so the test modules share the `app` import path.
