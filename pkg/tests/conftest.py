from hypothesis import HealthCheck, settings

# derandomized so CI failures reproduce; deadline off because GBT fits and
# permutation brute force have legitimate tail latencies
settings.register_profile(
    "suite", max_examples=30, deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")
