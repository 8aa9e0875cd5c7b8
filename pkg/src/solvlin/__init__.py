"""Control sets of linear control systems on the half-plane group."""
