"""Exception hierarchy.

Every exception carries a class level ``code`` which the command line uses
as the process exit status, the same way werkzeug's HTTP exceptions carry
their status code.
"""


class StateRankError(Exception):
    """Base class for every error raised by StateRank."""

    code = 1
    description = 'StateRank error'

    def __init__(self, description=None):
        if description is not None:
            self.description = description
        super(StateRankError, self).__init__(self.description)

    def __str__(self):
        return self.description


class ConfigError(StateRankError):
    """A configuration key holds an invalid value."""

    code = 2

    def __init__(self, field, reason):
        self.field = field
        super(ConfigError, self).__init__('%s: %s' % (field, reason))


class MissingArtifact(StateRankError):
    """A stage needs a file that an upstream stage has not produced."""

    code = 3

    def __init__(self, stage, path):
        self.stage = stage
        self.path = path
        super(MissingArtifact, self).__init__(
            'stage %r is missing upstream artifact %s' % (stage, path))


class ArtifactFormatError(StateRankError):
    """No representation is registered for an artifact's suffix."""

    code = 1


class DataError(StateRankError):
    """Input data violates the contract of an operation."""

    code = 4


class MalformedEventsError(DataError):
    """One or more lines of an events file could not be parsed.

    :param errors: ``(line_no, reason)`` pairs, 1-based line numbers
    :param records: records successfully parsed before and after the
        bad lines
    """

    def __init__(self, errors, records=()):
        self.errors = list(errors)
        self.records = list(records)
        shown = '; '.join('line %d: %s' % e for e in self.errors[:5])
        more = len(self.errors) - 5
        if more > 0:
            shown += '; ... %d more' % more
        super(MalformedEventsError, self).__init__(
            '%d malformed event line(s): %s' % (len(self.errors), shown))


class EmbeddingFormatError(DataError):
    pass


class TripletExhaustedError(DataError):
    pass


class ClusteringError(DataError):
    pass


class ProjectionError(DataError):

    def __init__(self, description, iteration=None):
        self.iteration = iteration
        if iteration is not None:
            description = '%s (iteration %d)' % (description, iteration)
        super(ProjectionError, self).__init__(description)


class StateflowError(DataError):
    pass


class StatisticsError(DataError):
    pass
