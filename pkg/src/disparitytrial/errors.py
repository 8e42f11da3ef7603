"""Exception hierarchy shared across the package."""


class DisparityTrialError(Exception):
    """Base class for all package errors."""


# --- data model -------------------------------------------------------------

class MissingColumn(DisparityTrialError):
    """A column named by the schema is absent from the file."""


class DuplicateKey(DisparityTrialError):
    """Two records share the same (person_id, visit_id)."""


class BadValue(DisparityTrialError):
    """A value is outside its declared domain (e.g., binary outcome of 2)."""


class MissingValue(DisparityTrialError):
    """A required cell is empty; missing data are rejected, not imputed."""


class UnknownVariable(DisparityTrialError):
    """An eligibility criterion references a column that does not exist."""


class EmptyStandard(DisparityTrialError):
    """No record satisfies the standard-population selector."""


class SpecMismatch(DisparityTrialError):
    """The trial specification is internally inconsistent with the request."""


# --- numerics ---------------------------------------------------------------

class BadKnots(DisparityTrialError):
    """Spline knots are unsorted or duplicated."""


class SeparationDetected(DisparityTrialError):
    """Logistic fit diverged: fitted probabilities pinned at 0/1."""


class RankDeficient(DisparityTrialError):
    """Normal-equations matrix is numerically singular."""


class DimensionMismatch(DisparityTrialError):
    """Design matrix shape does not match the fit or response."""


# --- estimation -------------------------------------------------------------

class PositivityViolation(DisparityTrialError):
    """A required denominator probability is (numerically) zero."""


class ModelFailure(DisparityTrialError):
    """A nuisance or outcome model could not be fit."""


class EmptyGroup(DisparityTrialError):
    """The reference subpopulation for a group mean is empty."""


class EmptyStage(DisparityTrialError):
    """A subset required by an estimation algorithm stage is empty."""


class EmptyCell(DisparityTrialError):
    """An identifying formula requires an unpopulated conditional."""


# --- sampling design --------------------------------------------------------

class DegenerateFractions(DisparityTrialError):
    """All sampling fractions are zero; nothing can be sampled."""


# --- simulator --------------------------------------------------------------

class BadDag(DisparityTrialError):
    """Structural-equation config violates the required node ordering."""


class EmptyConditioningCell(DisparityTrialError):
    """A stochastic-intervention donor cell has no records."""


# --- inference --------------------------------------------------------------

class TooFewClusters(DisparityTrialError):
    """Cluster bootstrap needs at least two distinct clusters."""


class ReplicateFailure(DisparityTrialError):
    """Too many bootstrap replicates failed to estimate."""


# --- cli --------------------------------------------------------------------

class ConfigError(DisparityTrialError):
    """Run configuration is missing, malformed, or inconsistent."""


class IoError(DisparityTrialError):
    """Report or table could not be written."""
