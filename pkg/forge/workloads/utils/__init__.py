"""
Domain engines: catalog, statistics, SQL core, execution, planning, providers
"""
