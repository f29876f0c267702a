# Makes 'routes' a Python package.
# Blueprints: experiments (run presets), fields (run artifacts).
