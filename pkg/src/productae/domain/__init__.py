"""Domain layer: value objects, errors, service protocols."""
