from .delaunay import BarycentricLocation, Triangulation, delaunay
from .hull import project_to_hull

__all__ = ["BarycentricLocation", "Triangulation", "delaunay", "project_to_hull"]
