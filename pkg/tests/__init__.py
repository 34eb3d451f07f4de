"""DepthDerain Test Suite"""
