from hypothesis import HealthCheck, settings

# jit warmup on first kernel call blows any per-example deadline
settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")
