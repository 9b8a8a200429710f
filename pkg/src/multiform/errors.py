class MultiFormError(Exception):
    """
    Error raised by the multiform library.

    Codes:
        KIND_MISMATCH: operands carry different scalar kinds
        INVALID_SCALAR: value cannot be represented in the requested kind (NaN, inf, nonzero imaginary part)
        PARSE_ERROR: scalar string could not be parsed
        ZERO_INPUT: root requested of zero
        NO_ROOT_IN_FIELD: exact kind has no k-th root of the value
        DIMENSION_MISMATCH: vector, matrix or tensor shapes disagree
        ARITY_MISMATCH: forms or permutations of different arity
        INVALID_PERMUTATION: images are not a bijection of 0..n-1
        INCONSISTENT_SIGN_MAP: generator signs do not extend to a character of the symmetric group
        SINGULAR_MATRIX: a map that must be invertible is not
        SINGULAR_INPUT: eigenvalue zero where an inverse root is required
        EIGENVALUE_NOT_FOUND: characteristic polynomial does not split over the exact field
        NOT_CONVERGED: numerical spectral computation or iteration failed
        NEGATIVE_REAL_EIGENVALUE: real inverse root requested for a negative eigenvalue
        MIXED_BLOCK_NONZERO: coefficient mixing two spectral blocks does not vanish
        WITNESS_INVALID: maps do not certify symmetric equivalence
        SELFADJOINTNESS_VIOLATED: intermediate map cannot be moved between slots
        NUMERICAL_INSTABILITY: residual or condition number above the configured limit
        NOT_A_COMPLEMENT: subspace is not a complement of the radical
        INVALID_DECOMPOSITION: blocks are dependent, do not span, or mix
        BLOCK_COUNT_MISMATCH: decompositions have different block dimension multisets
        OFF_DIAGONAL_NONZERO: transition matrix keeps a nonzero off-diagonal block
        UNCERTIFIABLE: indecomposability cannot be decided for the block size
        SINGULAR_DRAW: generator could not draw a valid instance
        INVALID_SPEC: configuration or generator spec is malformed
        SCHEMA_ERROR: JSON document does not match the interchange format
        IO_ERROR: file could not be read or written
    """

    def __init__(self, message, code, **details):
        super().__init__(message)
        self.code = code
        self.details = details

    def to_dict(self):
        return {"error": self.code, "message": str(self), "details": self.details}
