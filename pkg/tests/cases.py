"""Presentations shared across test modules."""

CHAIN2 = "(chain omega :delta (const 2))"
CHAIN3 = "(chain omega :delta (const 3))"
ANTI_GROWING = "(antichain omega :delta (affine 1 2))"
ANTI2 = "(antichain omega :delta (const 2))"
PRODUCT_CHAIN_PAIR = "(product (chain omega) (finite :nodes [x y] :delta [2 2]))"
SUM_CHAINS = "(sum (chain omega :delta (const 3)) (chain omega :delta (const 3)))"
SUM_CHAINS2 = "(sum (chain omega :delta (const 2)) (chain omega :delta (const 2)))"
SUM_OF_CHAINS = "(omega-sum :fiber (chain (affine 1 1)) :delta (const 2))"
FIBERS_INF = "(chain-with-fibers :fiber (antichain omega) :delta (const 3))"
FIBERS_FIN = "(chain-with-fibers :fiber (finite :nodes [u v] :delta [2 2]) :delta (const 2))"
