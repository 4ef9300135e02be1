"""Heat flow, optimal transport and curvature certificates on Carnot-type groups."""
