"""Organic direct and indirect effects of interventions on a mediator."""
