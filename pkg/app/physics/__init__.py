# Physics modules: ET model, perturbation theory, spin master equations
