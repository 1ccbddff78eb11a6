from hypothesis import settings

# Graph sampling and hypergeometric sums are slow on a first, cold call
settings.register_profile("keygraph", deadline=None, max_examples=60)
settings.load_profile("keygraph")
