from fractions import Fraction

DEFAULT_ELL = 2  # Block length used by the construction unless overridden
ESTIMATION_ELL = 2  # The estimation pipeline always amplifies with blocks of two bits
DEFAULT_SAMPLES = 100_000  # Monte-Carlo sample count for dist_mc
MC_DELTA = 0.01  # Failure probability of the reported Hoeffding radius
DEFAULT_SEED = 0

ABORT_LABEL = "bot"  # Serialized form of an abort leaf
ABORT_DELTA_LIMIT = Fraction(2, 5)  # Abort budgets must stay strictly below this for the abort-tree farness bound
DEFAULT_ABORT_DELTA = Fraction(39, 100)  # Largest abort budget the suite checks by default
BASE_ABORT_LIMIT = Fraction(1, 2)  # Abort budgets on the base function must stay strictly below this

TREE_SIZE_DIVISOR = 8  # Trees of size < 2^(opt*ell/8) are far from the amplified function
ABORT_TREE_SIZE_DIVISOR = 40  # Same for abort trees, with 2^(opt*ell/40)
DNF_SIZE_DIVISOR = 16  # DNFs of size < 2^(opt*ell/16) are far from the negated amplified function

TREE_RESTRICTION_FACTOR = 2  # Restrictions keep error within 2 eps and average depth within 2d/ell
ABORT_RESTRICTION_FACTOR = 10  # Abort restrictions keep error within 10 eps and depth within 10d/ell
ABORT_RESTRICTION_DELTA = Fraction(5, 4)  # ... and abort probability within 5/4 delta

FIRST_STAGE_FARNESS = Fraction(1, 800)  # Recorded guarantee of the first amplification stage
FIRST_STAGE_ABORT = Fraction(34, 100)  # Abort budget under which that guarantee holds
CHAIN_BASE = Fraction(799, 800)  # Base of the recorded (799/800)^m2 chain
DEFAULT_C1 = 1  # Stand-in for the hidden constant in m1 = c1/eps
DEFAULT_C2 = 1  # Stand-in for the hidden constant in m2 = c2*log2(1/gamma)
ALPHA_TOLERANCE = 1e-12  # Residual allowed when solving 6*alpha*ln(2/alpha) = 1

DEFAULT_TRIALS = 64  # Random candidate hypotheses per restriction check
LAW_TRIALS = 1000  # Random hypotheses per average-depth and average-width law check
LAW_MIN_SIZE = 2  # Random trees for the average-depth law have between 2 ...
LAW_MAX_SIZE = 64  # ... and 64 leaves
LAW_ATTEMPT_FACTOR = 20  # Draws allowed per accepted DNF in the average-width law check
