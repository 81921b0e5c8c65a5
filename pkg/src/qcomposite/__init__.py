"""q-composite key predistribution: exact and asymptotic resilience, connectivity simulation, replication attacks."""
