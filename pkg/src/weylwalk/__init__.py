"""Random walks on Weyl chambers driven by BC- and A-type hypergroup convolutions."""
