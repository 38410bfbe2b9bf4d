"""
Output components for clearing results, trajectories and table reproductions
"""
