"""Exception hierarchy shared by the pipeline stages."""


class PetcError(Exception):
    """Base class for all errors raised by petcsched."""


class InputError(PetcError, ValueError):
    """Malformed or out-of-range input."""


class DesignError(PetcError):
    """A control design step produced an unusable result (e.g. non-Hurwitz)."""


class NumericError(PetcError):
    """An iterative numerical method failed to converge."""


class AbstractionError(PetcError):
    """The traffic abstraction violates one of its integrity conditions."""


class ContractError(PetcError):
    """A caller asked for something the current object state does not allow."""


class QueryError(PetcError, KeyError):
    """A strategy was queried outside its winning set."""


class SimulationError(PetcError):
    """The simulated system left the set covered by the strategy."""
