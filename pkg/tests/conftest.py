from hypothesis import HealthCheck, settings

# Eigensolver-backed property tests can be slow on cold numpy threads;
# wall-clock deadlines would make them flaky.
settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")
