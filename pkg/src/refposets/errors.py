"""Error types shared across the package.

Each error carries a short stable ``code`` used by the CLI diagnostics.
"""


class RefError(Exception):
    code = "error"

    def __str__(self) -> str:
        msg = super().__str__()
        return f"{self.code}: {msg}" if msg else self.code


class ParseError(RefError):
    code = "parse-error"


class AddressError(RefError):
    code = "address-error"


class NoChainError(RefError):
    code = "no-chain"


class UnsupportedError(RefError):
    code = "unsupported"


class CapacityError(RefError):
    code = "capacity-error"


class ClosureError(RefError):
    code = "closure-error"


class ContractError(RefError):
    code = "contract-error"


class PreconditionError(RefError):
    code = "precondition-error"


class PartitionError(RefError):
    code = "partition-error"


class DepthError(RefError):
    """The truncation does not contain the nodes a construction needs."""

    code = "depth-error"


class CapExceeded(RefError):
    """A search hit its configured cap; the answer is unknown, not negative."""

    code = "cap-exceeded"


class DecodeError(RefError):
    code = "decode-error"


class PoolExhausted(RefError):
    """No registered 1-embedding gives a valid back-and-forth step."""

    code = "pool-exhausted"


class FormatError(DecodeError):
    """Input data outside the alphabet a decoder accepts."""

    code = "format-error"
