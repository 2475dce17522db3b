DIMENSION_MISMATCH = "Dimension mismatch"
INDEX_OUT_OF_RANGE = "Variable index out of range"
DEGREES_NOT_SORTED = "Polynomial degrees must be sorted ascending"
ELL_OUT_OF_RANGE = "Distinguished index ell must lie in [1, n]"
EMPTY_BOX = "Box intervals must satisfy lo <= hi"
NOT_IN_IDEAL = "Monomial is not in the gradient ideal"
DEGREE_MISMATCH = "Ideal power k must be at least m_ell - 1"
NON_POSITIVE_FACTOR = "Bound factors must be positive"
PHI_OUTSIDE_WINDOW = "Support of phi must lie in k+1 <= |alpha| <= k'"
F_NOT_INVERTIBLE = "Distribution matrix F is not invertible"
NO_PERTURBATION = "System file has no perturbation"
NO_DEFORMATION = "System file has no deformation"
NO_MULTIPLE_ROOTS = "System has no multiple root in the box"
SPLIT_FAILED = "Deformed system still has a multiple root"
RANK_DEFICIENT = "Sampled Jacobian is singular"
EMPTY_SYSTEM = "Polynomial list must not be empty"
T_ABOVE_BOUND = "Perturbation magnitude is not below the certified bound"
VERIFICATION_FAILED = "Verification failed"
CONSTANT_DEFORMATION = "Deformation does not depend on t, its magnitude has no effect"
