"""Writers for loss traces and generated responses."""
