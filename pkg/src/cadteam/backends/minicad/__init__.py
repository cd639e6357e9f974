"""Directory placed on the child interpreter's PYTHONPATH so generated
scripts can `import cadquery` against the builtin mini backend."""
