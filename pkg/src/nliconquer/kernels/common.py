"""Quadrature nodes and branch codes shared by both kernel backends."""

import numpy as np

# 15-point Kronrod extension of 7-point Gauss on [-1, 1]
XGK = np.array([
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0,
    0.207784955007898, 0.405845151377397, 0.586087235467691,
    0.741531185599394, 0.864864423359769, 0.949107912342759,
    0.991455371120813,
])
WGK = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728,
    0.204432940075298, 0.190350578064785, 0.169004726639267,
    0.140653259715525, 0.104790010322250, 0.063092092629979,
    0.022935322010529,
])
# Gauss weights apply to the odd-index Kronrod nodes
WG = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870,
])

# integrand branches: product-coordinate measures for each spectral geometry
BR_SCI_TRI = 0   # self-interference, triangular part of the hexagon
BR_SCI_SQ = 1    # self-interference, square part (negative products)
BR_XCI_POS = 2   # pair interference, positive product lobe
BR_XCI_NEG = 3   # pair interference, negative product lobe
BR_RHO = 4       # bare kernel, signed argument (full-spectrum strips)

DEFAULT_RTOL = 1e-4
MAX_DEPTH = 14
