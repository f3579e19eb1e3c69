from uwsPipe.segmenters.methods import align, dpseg  # noqa F401
