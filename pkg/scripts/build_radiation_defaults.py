"""Derive the shipped radiation matrices from A_r, B_r and the storage matrix Q_r.

S_r and C_r follow from the storage relations, so the energy integral equals
the dissipation of the storage function exactly. Prints TOML for [radiation].
"""
import numpy as np

A = np.array([[-0.8, -0.6], [1.0, 0.0]])
B = np.array([[1.0], [0.0]])
Q = np.diag([25000.0, 15000.0])

S = -0.5 * (A.T @ Q + Q @ A)
C = (Q @ B).T

eig = np.linalg.eigvals(A)
assert np.all(eig.real < 0), eig
assert np.all(np.linalg.eigvalsh(S) >= 0), S
print("# eigenvalues of A_r:", np.round(eig, 6))
print("A_r =", A.tolist())
print("B_r =", B.tolist())
print("C_r =", C.tolist())
print("Q_r =", Q.tolist())
print("S_r =", S.tolist())
print("# residuals:", np.linalg.norm(A.T @ Q + Q @ A + 2 * S), np.linalg.norm(Q @ B - C.T))
