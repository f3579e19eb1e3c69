from uwsPipe.discretizers.methods import general  # noqa F401
from uwsPipe.discretizers.methods import hmm, subspace, vq  # noqa F401
