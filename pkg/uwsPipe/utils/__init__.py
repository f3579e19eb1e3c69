from uwsPipe.utils import corpus, features, scoring  # noqa F401
from uwsPipe.utils import synthetic, units  # noqa F401
