# Profitable speed scaling: online scheduling with rejection, dual certificate, offline oracle
