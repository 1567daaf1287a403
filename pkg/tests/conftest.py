from hypothesis import HealthCheck, settings

# derandomized so every run explores the same examples
settings.register_profile(
    "repro", derandomize=True, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repro")
