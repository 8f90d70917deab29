## NOTE: Every error takes a single message string, so that torch DataLoader
## workers can re-raise them with their original type.


class OpenPanError(Exception):
    pass


class CategoryTableError(OpenPanError, ValueError):
    pass


class UnknownCategoryError(OpenPanError, ValueError):
    pass


class DimensionMismatchError(OpenPanError, ValueError):
    pass


class AnnotationError(OpenPanError, ValueError):
    pass


class SplitError(OpenPanError, ValueError):
    pass


class FeatureFileError(OpenPanError, ValueError):
    pass


class ProviderError(OpenPanError, RuntimeError):
    pass


class PairEvaluationError(OpenPanError, ValueError):
    pass


class DiscoveryError(OpenPanError, RuntimeError):
    pass


class SynthesisError(OpenPanError, ValueError):
    pass


class LossInputError(OpenPanError, ValueError):
    pass


class FusionError(OpenPanError, ValueError):
    pass


class ConfigError(OpenPanError, ValueError):
    pass
