"""
All the exceptions tiograph defines itself.
"""

__author__ = 'luckydonald'


class TioError(Exception):
    """
    Base class of everything tiograph raises on purpose.
    The command line maps subclasses to exit codes, see :func:`tiograph.cli.exit_code_for`.
    """
    pass
# end class


# #
# #  embedding bundles
# #

class BundleError(TioError):
    """ Something is wrong with an embedding bundle on disk or in memory. """
    pass
# end class


class MalformedManifest(BundleError):
    """ The `manifest.json` violates the schema. """
    pass
# end class


class DimensionMismatch(BundleError):
    """ A vector does not have exactly `dim` components. """
    pass
# end class


class NonFiniteValue(BundleError):
    """ A NaN or infinity was found where finite reals are required. """
    pass
# end class


class DanglingReference(BundleError):
    """ A manifest offset points outside of the embedding blob. """
    pass
# end class


class IoFailure(BundleError):
    """ Reading or writing a file failed. The original `OSError` is chained. """
    pass
# end class


class InvalidSpec(BundleError):
    """ A synthetic bundle was requested with impossible settings (zero counts, negative separation). """
    pass
# end class


# #
# #  knowledge graph
# #

class GraphError(TioError):
    pass
# end class


class EmptyGraph(GraphError):
    """ The video has no frames, so there is nothing to build a graph from. """
    pass
# end class


class UnknownNode(GraphError, KeyError):
    """ A node id (or relation index) does not exist in the graph. """
    pass
# end class


class MissingKeywords(GraphError):
    """ Triples were requested, but the bundle carries no keyword relations. """
    pass
# end class


# #
# #  numeric building blocks
# #

class ComputationError(TioError, ValueError):
    pass
# end class


class LengthMismatch(ComputationError):
    pass
# end class


class ShapeMismatch(ComputationError):
    pass
# end class


class EmptyEdgeSet(ComputationError):
    """ Interval normalization needs at least one edge distance. """
    pass
# end class


# #
# #  training
# #

class TrainingError(TioError):
    pass
# end class


class EmptyBatch(TrainingError, ValueError):
    pass
# end class


class InsufficientClasses(TrainingError, ValueError):
    """ Training needs at least two classes, each with a keyword to retrieve. """
    pass
# end class


class InvalidSupervision(TrainingError, ValueError):
    """ Edge supervision references pairs the graph can't score, or positives and negatives overlap. """
    pass
# end class


class NonFiniteGradient(TrainingError):
    """
    A gradient (or the loss) contained NaN or infinity. The optimizer step is aborted.
    """

    def __init__(self, *args, parameter_name=None, **kwargs: object) -> None:
        """
        :param parameter_name: Name of the first offending parameter, `None` if the loss itself was not finite.
        :type  parameter_name: str | None
        """
        super().__init__(*args, **kwargs)
        self.parameter_name = parameter_name
    # end def
# end class


# #
# #  metrics
# #

class MetricError(TioError, ValueError):
    pass
# end class


class EmptyGrid(MetricError):
    pass
# end class


class IncompleteGrid(MetricError):
    """ A threshold grid given by the caller must contain both 0 and 1. """
    pass
# end class


class DegenerateClasses(MetricError):
    """ AUC needs at least one positive and one negative ground truth. """
    pass
# end class


class NoRelevantItems(MetricError):
    pass
# end class


# #
# #  checkpoints
# #

class CheckpointError(TioError):
    """ The checkpoint is not a TIOCKPT1 file, is truncated, or doesn't fit the bundle. """
    pass
# end class
