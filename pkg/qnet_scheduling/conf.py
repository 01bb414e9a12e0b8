"""
Project-wide defaults, overridable through the Django settings module.
"""
from django.conf import settings


def get_steps():
    # desk-scale default; --full-scale switches to get_full_scale_steps()
    return getattr(settings, 'QNET_SCHEDULING_STEPS', 10_000)


def get_full_scale_steps():
    return getattr(settings, 'QNET_SCHEDULING_FULL_SCALE_STEPS', 100_000)


def get_gamma():
    return getattr(settings, 'QNET_SCHEDULING_GAMMA', 1.0)


def get_solver_node_budget():
    return getattr(settings, 'QNET_SCHEDULING_SOLVER_NODE_BUDGET', 1_000_000)


def get_workers():
    return getattr(settings, 'QNET_SCHEDULING_WORKERS', 1)


def get_heatmap_cell_size():
    return getattr(settings, 'QNET_SCHEDULING_HEATMAP_CELL_SIZE', 32)
