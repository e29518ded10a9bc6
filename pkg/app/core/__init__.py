# Numerical building blocks shared by the physics modules
