"""Command-line pipeline: config resolution, presets, run manifests and commands."""
