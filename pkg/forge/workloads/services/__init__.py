"""
Orchestration services for generation, labeling, planning, metrics and runs
"""
